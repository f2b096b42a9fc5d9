import java.util.Arrays;

public class Main {
    public static void main(String[] args) {
        int[] data = {3, 9, 4, 1};
        Arrays.sort(data);
        System.out.println("min " + data[0]);
    }
}
